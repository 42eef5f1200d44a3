#include "commands.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fmfusion/checkpoint.hpp"
#include "fmfusion/cost.hpp"
#include "fmfusion/metrics.hpp"
#include "fmfusion/synth.hpp"
#include "fmfusion/train.hpp"

namespace fmf::cli {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << content;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

fs::path prepare_out(const ExperimentConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.out_dir);
  write_file(cfg.out_dir / (command + ".ini"), cfg.to_ini());
  return cfg.out_dir;
}

// Replaces the model section with the checkpoint's architecture so the echoed
// config describes what actually ran.
void adopt_architecture(ExperimentConfig& cfg, const ArchitectureSpec& spec,
                        std::optional<Variant> expected) {
  if (expected && *expected != spec.variant) {
    throw ConfigError("--variant " + std::string(variant_name(*expected)) +
                      " does not match the checkpoint (" + std::string(variant_name(spec.variant)) + ")");
  }
  cfg.model.variant = spec.variant;
  cfg.model.channels = spec.stage_channels;
  cfg.model.shared_stages = spec.shared_stages;
}

Tensor batched(const Tensor& t) { return t.reshaped({1, t.dim(0), t.dim(1), t.dim(2)}); }

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SpecError*>(&e)) {
    return kExitInvalidConfig;
  }
  if (dynamic_cast<const NonFiniteLossError*>(&e)) return kExitNonFiniteLoss;
  if (dynamic_cast<const CheckpointError*>(&e)) return kExitBadCheckpoint;
  return kExitFailure;
}

void cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path out = prepare_out(cfg, "train");
  const ArchitectureSpec spec = cfg.model.spec();
  const DataSplit data = make_split(cfg.data.seed, cfg.data.train_scenes, cfg.data.test_scenes,
                                    cfg.data.height, cfg.data.width);
  const TrainResult result = train(spec, cfg.training, data.train);

  std::ostringstream csv;
  write_loss_csv(csv, result.history);
  write_file(out / "loss.csv", csv.str());
  save_checkpoint(out / "checkpoint", result.net, cfg.training.steps);

  log << "trained " << variant_name(spec.variant) << " for " << cfg.training.steps << " steps";
  if (!result.history.empty()) {
    log << ", seg_loss " << format_real(result.history.front().seg_loss) << " -> "
        << format_real(result.history.back().seg_loss);
  }
  log << "\ncheckpoint: " << (out / "checkpoint").generic_string() << '\n';
}

void cmd_eval(ExperimentConfig cfg, const fs::path& checkpoint, std::optional<Variant> expected,
              std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  adopt_architecture(cfg, ckpt.net.spec(), expected);
  cfg.validate();
  const fs::path dir = prepare_out(cfg, "eval");
  const DataSplit data = make_split(cfg.data.seed, cfg.data.train_scenes, cfg.data.test_scenes,
                                    cfg.data.height, cfg.data.width);
  const std::string json = evaluate(ckpt.net, data.test, cfg.threshold).to_json() + "\n";
  write_file(dir / "metrics.json", json);
  out << json;
}

void write_fd_profile_csv(std::ostream& os, const std::vector<FeatureDisparityReport>& reports,
                          const std::string& aggregate) {
  os << "pair_id,stage,fd\n";
  if (aggregate != "mean") {
    for (const auto& r : reports) {
      for (const auto& [stage, fd] : r.per_stage) {
        os << r.input_id << ',' << stage << ',' << format_real(fd) << '\n';
      }
    }
  }
  if (aggregate == "none" || reports.empty()) return;
  std::map<std::size_t, double> total;
  for (const auto& r : reports) {
    for (const auto& [stage, fd] : r.per_stage) total[stage] += fd;
  }
  for (const auto& [stage, sum] : total) {
    os << "mean," << stage << ',' << format_real(sum / static_cast<double>(reports.size())) << '\n';
  }
}

void cmd_fd_profile(ExperimentConfig cfg, const fs::path& checkpoint,
                    std::optional<Variant> expected, std::ostream& log) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  adopt_architecture(cfg, ckpt.net.spec(), expected);
  cfg.validate();
  const fs::path dir = prepare_out(cfg, "fd-profile");

  std::vector<FeatureDisparityReport> reports;
  for (std::size_t i = 0; i < cfg.fd.pairs; ++i) {
    const ScenePair s = generate_scene(cfg.fd.seed + i, kAllSceneKinds[i % 3], cfg.data.height,
                                       cfg.data.width);
    reports.push_back(fd_profile(ckpt.net, batched(s.rgb), batched(s.depth), std::to_string(i)));
  }
  std::ostringstream csv;
  write_fd_profile_csv(csv, reports, cfg.fd.aggregate);
  write_file(dir / "fd_profile.csv", csv.str());
  log << "fd profile of " << cfg.fd.pairs << " pairs: " << (dir / "fd_profile.csv").generic_string()
      << '\n';
}

void cmd_cost(const ExperimentConfig& cfg, bool all_variants, CostFormat format,
              const std::optional<fs::path>& dir, std::ostream& out) {
  cfg.validate();
  std::vector<CostReport> reports;
  if (all_variants) {
    for (Variant v : kAllVariants) {
      ExperimentConfig one = cfg;
      one.model.variant = v;
      one.model.shared_stages.reset();
      one.validate();
      reports.push_back(count_cost(one.model.spec(), cfg.data.height, cfg.data.width));
    }
  } else {
    reports.push_back(count_cost(cfg.model.spec(), cfg.data.height, cfg.data.width));
  }

  std::ostringstream text;
  if (format == CostFormat::Json) {
    if (all_variants) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& r : reports) arr.push_back(nlohmann::ordered_json::parse(r.to_json()));
      text << arr.dump(2) << '\n';
    } else {
      text << reports.front().to_json() << '\n';
    }
  } else {
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (i) text << '\n';
      reports[i].write_table(text);
    }
  }
  out << text.str();
  if (dir) {
    ExperimentConfig echoed = cfg;
    echoed.out_dir = *dir;
    prepare_out(echoed, "cost");
    write_file(*dir / (format == CostFormat::Json ? "cost.json" : "cost.txt"), text.str());
  }
}

void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path dir = prepare_out(cfg, "gen-data");
  const DataSplit data = make_split(cfg.data.seed, cfg.data.train_scenes, cfg.data.test_scenes,
                                    cfg.data.height, cfg.data.width);
  std::ostringstream index;
  index << "split,index,seed,kind,road_fraction\n";
  const auto emit = [&](const std::string& split, const std::vector<ScenePair>& scenes) {
    fs::create_directories(dir / split);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const ScenePair& s = scenes[i];
      std::ostringstream stem;
      stem << split << '/' << std::setw(3) << std::setfill('0') << i << '_' << scene_kind_name(s.kind);
      write_ppm(dir / (stem.str() + "_rgb.ppm"), s.rgb);
      write_pgm(dir / (stem.str() + "_depth.pgm"), s.depth);
      write_pgm(dir / (stem.str() + "_mask.pgm"), s.mask);
      double road = 0.0;
      for (double v : s.mask.data()) road += v;
      index << split << ',' << i << ',' << s.seed << ',' << scene_kind_name(s.kind) << ','
            << format_real(road / static_cast<double>(s.mask.numel())) << '\n';
    }
  };
  emit("train", data.train);
  emit("test", data.test);
  write_file(dir / "scenes.csv", index.str());
  log << "wrote " << data.train.size() << " train and " << data.test.size() << " test scenes to "
      << dir.generic_string() << '\n';
}

}  // namespace fmf::cli
