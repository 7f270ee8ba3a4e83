#include "fcdd/util/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fcdd/util/errors.hpp"

namespace fcdd {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> table = {
      // Dataset and run layout
      {"dataset.root", ""},          // directory with normal/ and anomalous/
      {"run.seed", "1"},             // root seed for every random choice
      {"run.out_dir", "run"},        // where outputs land
      {"run.manifest", ""},          // empty = <out_dir>/manifest.tsv
      {"run.model", ""},             // empty = <out_dir>/checkpoint.bin

      // Splitting
      {"split.train", "7"},
      {"split.calibration", "1"},
      {"split.test", "2"},

      // Training protocol
      {"train.backbone", "cnn27"},
      {"train.batch_size", "30"},
      {"train.epochs", "50"},
      {"train.learning_rate", "1e-4"},
      {"train.grad_decay", "0.9"},
      {"train.sq_grad_decay", "0.99"},
      {"train.stability_floor", "1e-6"},
      {"train.use_anomalous", "true"},

      // Heatmap rendering
      {"heatmap.images", ""},        // directory of inputs to explain
      {"heatmap.sigma", "0"},        // 0 = one receptive-field stride
      {"heatmap.quantile", "0.25"},
      {"heatmap.truncation", "4"},
      {"heatmap.colormap", "damage"},
      {"heatmap.underlay", "true"},

      // Scoring and evaluation
      {"eval.split", "test"},
      {"eval.calibration_split", "calibration"},
      {"eval.bins", "20"},

      // Synthetic corpus
      {"synth.n_normal", "400"},
      {"synth.n_anomalous", "100"},
      {"synth.image_size", "224"},
      {"synth.texture_cells", "8"},
      {"synth.defect_kind", "line"},
      {"synth.defect_contrast", "0.5"},
      {"synth.line_width", "5"},
  };
  return table;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (values_.find(key) == values_.end()) {
    throw ConfigError("unknown config key: " + key);
  }
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("unknown config key: " + key);
  }
  return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const std::string& text = get(key);
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0') {
    throw ConfigError("config key " + key + " is not an integer: " + text);
  }
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& text = get(key);
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw ConfigError("config key " + key + " is not a number: " + text);
  }
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& text = get(key);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config key " + key + " is not a boolean: " + text);
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) {
    out << key << "=" << value << "\n";
  }
  return out.str();
}

}  // namespace fcdd
