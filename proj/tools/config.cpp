#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fmfusion/edges.hpp"

namespace fmf::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string quoted(std::string_view s) { return "'" + std::string(s) + "'"; }

std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("expected a non-negative integer, got " + quoted(text));
  }
  return v;
}

double parse_real(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError("expected a finite number, got " + quoted(text));
  }
  return v;
}

std::string list_string(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

std::vector<IniEntry> parse_ini(std::string_view text) {
  std::vector<IniEntry> entries;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    if (section.empty()) throw ConfigError(where + "key outside of any [section]");
    IniEntry e{section, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))),
               line_no};
    if (e.key.empty()) throw ConfigError(where + "empty key");
    for (const IniEntry& prev : entries) {
      if (prev.section == e.section && prev.key == e.key) {
        throw ConfigError(where + "duplicate key " + e.section + "." + e.key);
      }
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<std::size_t> parse_index_list(std::string_view text) {
  text = trim(text);
  if (text == "none") return {};
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = trim(text.substr(pos, comma - pos));
    if (item.empty()) throw ConfigError("malformed list " + quoted(text) + ": empty entry");
    try {
      out.push_back(static_cast<std::size_t>(parse_u64(item)));
    } catch (const ConfigError&) {
      throw ConfigError("malformed list " + quoted(text) + ": " + quoted(item) + " is not an index");
    }
    if (comma == text.size()) break;
    pos = comma + 1;
  }
  return out;
}

ArchitectureSpec ModelConfig::spec() const {
  ArchitectureSpec s = ArchitectureSpec::for_variant(variant, channels);
  if (shared_stages) s.shared_stages = *shared_stages;
  return s;
}

void ExperimentConfig::set(std::string_view section, std::string_view key, std::string_view value) {
  static const std::map<std::string_view, std::set<std::string_view>> known = {
      {"model", {"variant", "channels", "shared_stages"}},
      {"training", {"alpha", "lr", "momentum", "steps", "batch_size", "fd_stages", "seed"}},
      {"data", {"seed", "train_scenes", "test_scenes", "height", "width"}},
      {"eval", {"threshold"}},
      {"fd_profile", {"pairs", "seed", "aggregate"}},
      {"output", {"dir"}},
  };
  const std::string name = std::string(section) + "." + std::string(key);
  const auto sec = known.find(section);
  if (sec == known.end()) throw ConfigError("unknown section [" + std::string(section) + "]");
  if (!sec->second.count(key)) throw ConfigError("unknown key " + name);
  value = trim(value);

  try {
    if (section == "model") {
      if (key == "variant") {
        model.variant = parse_variant(value);
      } else if (key == "channels") {
        model.channels = parse_index_list(value);
      } else if (value == "default") {
        model.shared_stages.reset();
      } else {
        model.shared_stages = as_set(parse_index_list(value));
      }
    } else if (section == "training") {
      if (key == "alpha") training.alpha = parse_real(value);
      if (key == "lr") training.lr = parse_real(value);
      if (key == "momentum") training.momentum = parse_real(value);
      if (key == "steps") training.steps = parse_u64(value);
      if (key == "batch_size") training.batch_size = parse_u64(value);
      if (key == "seed") training.seed = parse_u64(value);
      if (key == "fd_stages") {
        if (value == "all") training.fd_stages.reset();
        else training.fd_stages = as_set(parse_index_list(value));
      }
    } else if (section == "data") {
      if (key == "seed") data.seed = parse_u64(value);
      if (key == "train_scenes") data.train_scenes = parse_u64(value);
      if (key == "test_scenes") data.test_scenes = parse_u64(value);
      if (key == "height") data.height = parse_u64(value);
      if (key == "width") data.width = parse_u64(value);
    } else if (section == "eval") {
      threshold = parse_real(value);
    } else if (section == "fd_profile") {
      if (key == "pairs") fd.pairs = parse_u64(value);
      if (key == "seed") fd.seed = parse_u64(value);
      if (key == "aggregate") {
        if (value != "none" && value != "mean" && value != "both") {
          throw ConfigError("expected none, mean or both, got " + quoted(value));
        }
        fd.aggregate = std::string(value);
      }
    } else {
      if (value.empty()) throw ConfigError("must not be empty");
      out_dir = std::string(value);
    }
  } catch (const SpecError& e) {
    throw ConfigError(name + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  ExperimentConfig cfg;
  for (const IniEntry& e : parse_ini(text)) {
    try {
      cfg.set(e.section, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << is.rdbuf();
  try {
    return parse(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void ExperimentConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    throw ConfigError("override must look like section.key=value, got " + quoted(assignment));
  }
  set(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
      assignment.substr(eq + 1));
}

void ExperimentConfig::validate() const {
  ArchitectureSpec spec;
  try {
    spec = model.spec();
    spec.validate();
  } catch (const SpecError& e) {
    throw ConfigError(std::string("[model] ") + e.what());
  }
  try {
    training.validate(spec.stage_count());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[training] ") + e.what());
  }
  const std::size_t factor = std::size_t{1} << spec.stage_count();
  for (const std::size_t d : {data.height, data.width}) {
    if (d < 32 || d % 16 != 0 || d % factor != 0) {
      throw ConfigError("[data] height and width must be >= 32 and divisible by 16 and by " +
                        std::to_string(factor) + ", got " + std::to_string(data.height) + "x" +
                        std::to_string(data.width));
    }
  }
  if (data.train_scenes == 0 || data.test_scenes == 0) {
    throw ConfigError("[data] train_scenes and test_scenes must be >= 1");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("[eval] threshold must lie in [0, 1]");
  if (fd.pairs == 0) throw ConfigError("[fd_profile] pairs must be >= 1");
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream os;
  const auto shared = model.shared_stages
                          ? list_string({model.shared_stages->begin(), model.shared_stages->end()})
                          : std::string("default");
  const auto fd_stages = training.fd_stages
                             ? list_string({training.fd_stages->begin(), training.fd_stages->end()})
                             : std::string("all");
  os << "[model]\n"
     << "variant = " << variant_name(model.variant) << '\n'
     << "channels = " << list_string(model.channels) << '\n'
     << "shared_stages = " << shared << '\n'
     << "\n[training]\n"
     << "alpha = " << format_real(training.alpha) << '\n'
     << "lr = " << format_real(training.lr) << '\n'
     << "momentum = " << format_real(training.momentum) << '\n'
     << "steps = " << training.steps << '\n'
     << "batch_size = " << training.batch_size << '\n'
     << "fd_stages = " << fd_stages << '\n'
     << "seed = " << training.seed << '\n'
     << "\n[data]\n"
     << "seed = " << data.seed << '\n'
     << "train_scenes = " << data.train_scenes << '\n'
     << "test_scenes = " << data.test_scenes << '\n'
     << "height = " << data.height << '\n'
     << "width = " << data.width << '\n'
     << "\n[eval]\n"
     << "threshold = " << format_real(threshold) << '\n'
     << "\n[fd_profile]\n"
     << "pairs = " << fd.pairs << '\n'
     << "seed = " << fd.seed << '\n'
     << "aggregate = " << fd.aggregate << '\n'
     << "\n[output]\n"
     << "dir = " << out_dir.generic_string() << '\n';
  return os.str();
}

}  // namespace fmf::cli
