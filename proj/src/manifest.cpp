#include "eaaslab/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "eaaslab/digest.hpp"

namespace eaaslab {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  // defense strings contain commas, so ';' wins when present
  const char sep = s.find(';') != std::string::npos ? ';' : ',';
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("manifest: bad boolean for " + key + ": " + v);
}

}  // namespace

ExperimentManifest ExperimentManifest::parse_string(const std::string& text) {
  ExperimentManifest m;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("manifest line " + std::to_string(lineno) +
                                                ": malformed section header");
      section = line.substr(1, line.size() - 2);
      if (section != "experiment" && section != "data" && section != "pretrain" &&
          section != "service" && section != "attack" && section != "downstream" &&
          section != "sweep")
        throw ConfigError("manifest: unknown section [" + section + "]");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("manifest line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto unknown = [&]() -> ConfigError {
      return ConfigError("manifest: unknown key '" + key + "' in [" + section + "]");
    };

    if (section == "experiment") {
      if (key == "name") m.name = val;
      else if (key == "output_dir") m.output_dir = val;
      else if (key == "seed") m.seed = std::stoull(val);
      else if (key == "deterministic") m.deterministic = parse_bool(val, key);
      else if (key == "canonical") m.canonical = std::stoi(val);
      else throw unknown();
    } else if (section == "data") {
      if (key == "root") m.data_root = val;
      else if (key == "pretrain_dataset") m.pretrain_dataset = val;
      else if (key == "pretrain_count") m.pretrain_count = std::stoll(val);
      else if (key == "surrogate_dataset") m.surrogate_dataset = val;
      else if (key == "surrogate_split") m.surrogate_split = val;
      else if (key == "surrogate_size") m.surrogate_size = std::stoll(val);
      else if (key == "downstream") {
        m.downstream.clear();
        for (const auto& t : split_list(val)) {
          auto colon = t.find(':');
          TaskSpec ts;
          ts.dataset = colon == std::string::npos ? t : t.substr(0, colon);
          if (colon != std::string::npos) ts.classes = std::stoi(t.substr(colon + 1));
          m.downstream.push_back(ts);
        }
      } else if (key == "downstream_train") m.downstream_train = std::stoll(val);
      else if (key == "downstream_test") m.downstream_test = std::stoll(val);
      else throw unknown();
    } else if (section == "pretrain") {
      if (key == "algo") m.pretrain.algo = val;
      else if (key == "arch") m.pretrain.arch = val;
      else if (key == "width") m.pretrain.width = std::stoi(val);
      else if (key == "feature_dim") m.pretrain.feature_dim = std::stoi(val);
      else if (key == "epochs") m.pretrain.epochs = std::stoi(val);
      else if (key == "batch") m.pretrain.batch_size = std::stoi(val);
      else if (key == "lr") m.pretrain.lr = std::stod(val);
      else if (key == "tau") m.pretrain.tau = std::stod(val);
      else if (key == "aug") m.pretrain.aug = AugmentationSpec::parse(val);
      else if (key == "moco_momentum") m.pretrain.momentum = std::stod(val);
      else if (key == "moco_queue") m.pretrain.queue_capacity = std::stoi(val);
      else if (key == "proj_dim") m.pretrain.proj_dim = std::stoi(val);
      else throw unknown();
    } else if (section == "service") {
      if (key == "defense") m.defense = val;
      else if (key == "price_per_1000") m.price_per_1000 = std::stod(val);
      else if (key == "budget_cap") m.budget_cap = std::stoll(val);
      else if (key == "poison_surrogate_size") m.poison_surrogate_size = std::stoll(val);
      else throw unknown();
    } else if (section == "attack") {
      if (key == "variants") m.attack_variants = split_list(val);
      else if (key == "lambda") m.attack_lambda = std::stod(val);
      else if (key == "epochs") m.attack_epochs = std::stoi(val);
      else if (key == "lr") m.attack_lr = std::stod(val);
      else if (key == "batch") m.attack_batch = std::stoi(val);
      else if (key == "metric") m.attack_metric = val;
      else if (key == "aug") m.attack_aug = val;
      else if (key == "arch") m.attack_arch = val;
      else if (key == "width") m.attack_width = std::stoi(val);
      else if (key == "optimizer") m.attack_optimizer = val;
      else throw unknown();
    } else if (section == "downstream") {
      if (key == "epochs") m.classifier.epochs = std::stoi(val);
      else if (key == "lr") m.classifier.lr = std::stod(val);
      else if (key == "batch") m.classifier.batch_size = std::stoi(val);
      else if (key == "hidden") {
        m.classifier.hidden.clear();
        for (const auto& h : split_list(val)) m.classifier.hidden.push_back(std::stoi(h));
      } else throw unknown();
    } else if (section == "sweep") {
      if (key == "axis") m.sweep_axis = val;
      else if (key == "values") m.sweep_values = split_list(val);
      else throw unknown();
    } else {
      throw ConfigError("manifest: key outside any section: " + key);
    }
  }

  // validation beyond syntax
  if (!m.sweep_axis.empty()) {
    static const std::vector<std::string> kAxes = {"lambda", "surrogate_size", "defense",
                                                   "metric", "variant"};
    if (std::find(kAxes.begin(), kAxes.end(), m.sweep_axis) == kAxes.end())
      throw ConfigError("manifest: unknown sweep axis: " + m.sweep_axis);
    if (m.sweep_values.empty()) throw ConfigError("manifest: sweep axis without values");
  }
  for (const auto& v : m.attack_variants) variant_from_name(v);
  metric_from_name(m.attack_metric);
  AugmentationSpec::parse(m.attack_aug);
  DefenseConfig::parse(m.defense);
  if (m.attack_arch != "auto" && !is_known_arch(m.attack_arch))
    throw ConfigError("manifest: unknown attack arch: " + m.attack_arch);
  if (m.attack_optimizer != "adam" && m.attack_optimizer != "sgd")
    throw ConfigError("manifest: attack optimizer must be adam or sgd");
  return m;
}

ExperimentManifest ExperimentManifest::parse_file(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw LoadError("cannot open manifest: " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_string(ss.str());
}

std::string ExperimentManifest::canonical_text() const {
  std::ostringstream os;
  os << "[experiment]\n"
     << "name = " << name << "\nseed = " << seed
     << "\ndeterministic = " << (deterministic ? "true" : "false")
     << "\ncanonical = " << canonical << "\n";
  os << "[data]\n"
     << "pretrain_dataset = " << pretrain_dataset << "\npretrain_count = " << pretrain_count
     << "\nsurrogate_dataset = " << surrogate_dataset
     << "\nsurrogate_split = " << surrogate_split << "\nsurrogate_size = " << surrogate_size
     << "\ndownstream = ";
  for (size_t i = 0; i < downstream.size(); ++i) os << (i ? "," : "") << downstream[i].label();
  os << "\ndownstream_train = " << downstream_train << "\ndownstream_test = " << downstream_test
     << "\n";
  os << "[pretrain]\n" << pretrain.describe() << "\n";
  os << "[service]\ndefense = " << defense << "\nprice_per_1000 = " << price_per_1000
     << "\nbudget_cap = " << budget_cap << "\npoison_surrogate_size = " << poison_surrogate_size
     << "\n";
  os << "[attack]\nvariants = ";
  for (size_t i = 0; i < attack_variants.size(); ++i) os << (i ? "," : "") << attack_variants[i];
  os << "\nlambda = " << attack_lambda << "\nepochs = " << attack_epochs
     << "\nlr = " << attack_lr << "\nbatch = " << attack_batch
     << "\nmetric = " << attack_metric << "\naug = " << attack_aug
     << "\narch = " << attack_arch << "\nwidth = " << attack_width
     << "\noptimizer = " << attack_optimizer << "\n";
  os << "[downstream]\n" << classifier.describe() << "\n";
  if (!sweep_axis.empty()) {
    os << "[sweep]\naxis = " << sweep_axis << "\nvalues = ";
    for (size_t i = 0; i < sweep_values.size(); ++i) os << (i ? ";" : "") << sweep_values[i];
    os << "\n";
  }
  return os.str();
}

std::string ExperimentManifest::digest() const { return sha256_hex(canonical_text()); }

std::vector<SweepPoint> expand_sweep(const ExperimentManifest& m) {
  std::vector<SweepPoint> out;
  if (m.sweep_axis.empty()) {
    out.push_back(SweepPoint{m, "single"});
    return out;
  }
  for (const auto& v : m.sweep_values) {
    ExperimentManifest p = m;
    p.sweep_axis.clear();
    p.sweep_values.clear();
    if (m.sweep_axis == "lambda") p.attack_lambda = std::stod(v);
    else if (m.sweep_axis == "surrogate_size") p.surrogate_size = std::stoll(v);
    else if (m.sweep_axis == "defense") p.defense = v;
    else if (m.sweep_axis == "metric") p.attack_metric = v;
    else if (m.sweep_axis == "variant") p.attack_variants = {v};
    out.push_back(SweepPoint{std::move(p), m.sweep_axis + "=" + v});
  }
  return out;
}

}  // namespace eaaslab
